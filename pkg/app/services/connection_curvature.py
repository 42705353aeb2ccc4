from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from app.models.errors import DegenerateSpanError, EngineError
from app.services.groups import GroupModel
from app.services.laurent import L_MONOMIAL, ONE, ZERO, SqrtLPoly
from app.utils.jets import Jet
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

RANGE = range(3)
METRIC_DIAGONAL = (ONE, ONE, L_MONOMIAL)
# Exponent shift dividing by g_kk (L is s^2)
METRIC_SHIFT = (0, 0, -2)
HALF = Fraction(1, 2)


@dataclass(frozen=True)
class ConnectionTable:
    """entries[i][j][k] = Gamma^k_ij, meaning nabla_{X_i} X_j = sum_k Gamma^k_ij X_k."""
    group_name: str
    entries: Tuple[Tuple[Tuple[SqrtLPoly, ...], ...], ...]

    def __getitem__(self, index: Tuple[int, int, int]) -> SqrtLPoly:
        i, j, k = index
        return self.entries[i][j][k]

    def evaluate(self, L: float) -> np.ndarray:
        return np.array([[[self.entries[i][j][k].evaluate(L) for k in RANGE] for j in RANGE] for i in RANGE])

    def coefficient_array(self, exponent: int) -> np.ndarray:
        """Float array [i, j, k] of the s^exponent coefficient of every entry."""
        return np.array(
            [[[float(self.entries[i][j][k].coefficient(exponent)) for k in RANGE] for j in RANGE] for i in RANGE]
        )


@dataclass(frozen=True)
class CurvatureTable:
    """entries[i][j][k][l] = R^l_ijk, meaning R(X_i, X_j) X_k = sum_l R^l_ijk X_l."""
    group_name: str
    entries: Tuple[Tuple[Tuple[Tuple[SqrtLPoly, ...], ...], ...], ...]

    def __getitem__(self, index: Tuple[int, int, int, int]) -> SqrtLPoly:
        i, j, k, l = index
        return self.entries[i][j][k][l]

    def lowered(self, i: int, j: int, k: int, l: int) -> SqrtLPoly:
        """R_ijkl = <R(X_i, X_j) X_k, X_l>_L."""
        return self.entries[i][j][k][l] * METRIC_DIAGONAL[l]

    def evaluate(self, L: float) -> np.ndarray:
        return np.array(
            [[[[self.entries[i][j][k][l].evaluate(L) for l in RANGE] for k in RANGE] for j in RANGE] for i in RANGE]
        )


@dataclass(frozen=True)
class TableEntryDifference:
    table: str
    entry: str
    component: str
    derived: str
    reference: str
    difference: str


@dataclass(frozen=True)
class TableComparison:
    table: str
    group_name: str
    entries_compared: int
    differences: Tuple[TableEntryDifference, ...]

    @property
    def exact(self) -> bool:
        return not self.differences

    @property
    def matching(self) -> int:
        return self.entries_compared - len(self.differences)


# 📌 **Derivation**
def koszul_connection(g: GroupModel) -> ConnectionTable:
    """
    Levi-Civita connection of g_L in the frame, from the structure constants.
    Gamma^k_ij = (c^k_ij g_kk - c^i_jk g_ii + c^j_ki g_jj) / (2 g_kk).
    """
    c = g.structure_constant
    G = METRIC_DIAGONAL
    entries = tuple(
        tuple(
            tuple(
                (c(k, i, j) * G[k] - c(i, j, k) * G[i] + c(j, k, i) * G[j]).shift(METRIC_SHIFT[k]).scale(HALF)
                for k in RANGE
            )
            for j in RANGE
        )
        for i in RANGE
    )
    return ConnectionTable(g.name, entries)


def curvature_tensor(t: ConnectionTable, g: GroupModel) -> CurvatureTable:
    """R^l_ijk = sum_m (Gamma^m_jk Gamma^l_im - Gamma^m_ik Gamma^l_jm) - sum_m c^m_ij Gamma^l_mk."""
    def entry(i: int, j: int, k: int, l: int) -> SqrtLPoly:
        total = ZERO
        for m in RANGE:
            total = total + t[j, k, m] * t[i, m, l] - t[i, k, m] * t[j, m, l]
            total = total - t[m, k, l] * g.structure_constant(m, i, j)
        return total

    entries = tuple(
        tuple(tuple(tuple(entry(i, j, k, l) for l in RANGE) for k in RANGE) for j in RANGE) for i in RANGE
    )
    return CurvatureTable(t.group_name, entries)


# 📌 **Exact identities**
def torsion_defects(t: ConnectionTable, g: GroupModel) -> List[Tuple[int, int, int]]:
    return [
        (i, j, k)
        for i in RANGE
        for j in RANGE
        for k in RANGE
        if not (t[i, j, k] - t[j, i, k] - g.structure_constant(k, i, j)).is_zero()
    ]


def metric_defects(t: ConnectionTable) -> List[Tuple[int, int, int]]:
    return [
        (i, j, k)
        for i in RANGE
        for j in RANGE
        for k in RANGE
        if not (t[i, j, k] * METRIC_DIAGONAL[k] + t[i, k, j] * METRIC_DIAGONAL[j]).is_zero()
    ]


def curvature_symmetry_defects(r: CurvatureTable) -> Dict[str, List[Tuple[int, int, int, int]]]:
    """Index tuples violating each curvature symmetry; empty lists mean exact."""
    defects: Dict[str, List[Tuple[int, int, int, int]]] = {
        "antisymmetry_first_pair": [],
        "antisymmetry_last_pair": [],
        "pair_symmetry": [],
        "first_bianchi": [],
    }
    for i in RANGE:
        for j in RANGE:
            for k in RANGE:
                for l in RANGE:
                    if not (r[i, j, k, l] + r[j, i, k, l]).is_zero():
                        defects["antisymmetry_first_pair"].append((i, j, k, l))
                    if not (r.lowered(i, j, k, l) + r.lowered(i, j, l, k)).is_zero():
                        defects["antisymmetry_last_pair"].append((i, j, k, l))
                    if not (r.lowered(i, j, k, l) - r.lowered(k, l, i, j)).is_zero():
                        defects["pair_symmetry"].append((i, j, k, l))
                    if not (r[i, j, k, l] + r[j, k, i, l] + r[k, i, j, l]).is_zero():
                        defects["first_bianchi"].append((i, j, k, l))
    return defects


# 📌 **Sectional curvature**
def sectional_curvature(r, u, v, L: float) -> np.ndarray:
    """
    Sectional curvature of span(u, v) under g_L, normalizing internally.
    :param r: CurvatureTable, or a float array R[i, j, k, l] already evaluated at L.
    :param u: Frame components, shape (3, *batch).
    :param v: Frame components, shape (3, *batch).
    :return: -<R(u,v)u, v>_L / (|u|^2 |v|^2 - <u,v>^2).
    """
    R = r.evaluate(L) if isinstance(r, CurvatureTable) else np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    metric = GroupModel.metric_diagonal(L).reshape((3,) + (1,) * (u.ndim - 1))
    uu = GroupModel.inner(u, u, L)
    vv = GroupModel.inner(v, v, L)
    uv = GroupModel.inner(u, v, L)
    denominator = uu * vv - uv * uv
    if np.any(denominator <= 1e-12 * uu * vv):
        raise DegenerateSpanError("Vectors do not span a 2-plane")
    numerator = np.einsum("i...,j...,k...,ijkl,l...->...", u, v, u, R, metric * v)
    return -numerator / denominator


# 📌 **Published closed forms (comparison only)**
_REFERENCE_CONNECTIONS: Dict[str, Dict[Tuple[int, int], Dict[int, str]]] = {
    "affine_connection": {
        (1, 2): {3: "1/2"},
        (2, 1): {3: "-1/2"},
        (1, 3): {2: "-1/2*L"},
        (3, 1): {2: "-1/2*L", 3: "-1"},
        (2, 3): {1: "1/2*L"},
        (3, 2): {1: "1/2*L"},
        (3, 3): {1: "L"},
    },
    "e11_connection": {
        (1, 2): {3: "1/2 - 1/2*L^-1"},
        (2, 1): {3: "-1/2 - 1/2*L^-1"},
        (1, 3): {2: "-1/2*L + 1/2"},
        (3, 1): {2: "-1/2*L - 1/2"},
        (2, 3): {1: "1/2*L + 1/2"},
        (3, 2): {1: "1/2*L + 1/2"},
    },
}

# Only i < j pairs are published; the rest follow from antisymmetry.
_REFERENCE_CURVATURES: Dict[str, Dict[Tuple[int, int, int], Dict[int, str]]] = {
    "affine_curvature": {
        (1, 2, 1): {2: "3/4*L", 3: "1"},
        (1, 2, 2): {1: "-3/4*L"},
        (1, 2, 3): {1: "-L"},
        (1, 3, 1): {2: "L", 3: "3/4*L"},
        (1, 3, 2): {1: "-L"},
        (1, 3, 3): {1: "1/4*L^2 - L"},
        (2, 3, 1): {},
        (2, 3, 2): {3: "-1/4*L"},
        (2, 3, 3): {2: "1/4*L^2"},
    },
    "e11_curvature": {
        (1, 2, 1): {2: "3/4*L + 1/2 - 1/4*L^-1"},
        (1, 2, 2): {1: "-3/4*L - 1/2 + 1/4*L^-1"},
        (1, 2, 3): {},
        (1, 3, 1): {3: "-1/4*L + 1/2 + 3/4*L^-1"},
        (1, 3, 2): {},
        (1, 3, 3): {1: "1/4*L^2 - 1/2*L - 3/4"},
        (2, 3, 1): {},
        (2, 3, 2): {3: "-1/4*L - 1/2 - 1/4*L^-1"},
        (2, 3, 3): {2: "1/4*L^2 + 1/2*L + 1/4"},
    },
}

REFERENCE_FOR_GROUP = {
    "affine": ("affine_connection", "affine_curvature"),
    "e11": ("e11_connection", "e11_curvature"),
}


def reference_names() -> List[str]:
    return sorted(_REFERENCE_CONNECTIONS) + sorted(_REFERENCE_CURVATURES)


def reference_connection(name: str) -> ConnectionTable:
    if name not in _REFERENCE_CONNECTIONS:
        raise EngineError(f"Unknown reference connection table '{name}'")
    published = _REFERENCE_CONNECTIONS[name]
    entries = tuple(
        tuple(
            tuple(SqrtLPoly.parse(published.get((i + 1, j + 1), {}).get(k + 1, "0")) for k in RANGE)
            for j in RANGE
        )
        for i in RANGE
    )
    return ConnectionTable(name, entries)


def reference_curvature(name: str) -> CurvatureTable:
    """Full table from the published i < j entries, extended by antisymmetry in (i, j)."""
    if name not in _REFERENCE_CURVATURES:
        raise EngineError(f"Unknown reference curvature table '{name}'")
    published = _REFERENCE_CURVATURES[name]

    def entry(i: int, j: int, k: int, l: int) -> SqrtLPoly:
        if i == j:
            return ZERO
        if i < j:
            return SqrtLPoly.parse(published[(i + 1, j + 1, k + 1)].get(l + 1, "0"))
        return -SqrtLPoly.parse(published[(j + 1, i + 1, k + 1)].get(l + 1, "0"))

    entries = tuple(
        tuple(tuple(tuple(entry(i, j, k, l) for l in RANGE) for k in RANGE) for j in RANGE) for i in RANGE
    )
    return CurvatureTable(name, entries)


def compare_connection(t: ConnectionTable, reference: str) -> TableComparison:
    """All 27 entry differences (derived minus published); exact when none remain."""
    published = reference_connection(reference)
    differences = []
    for i in RANGE:
        for j in RANGE:
            for k in RANGE:
                diff = t[i, j, k] - published[i, j, k]
                if not diff.is_zero():
                    differences.append(
                        TableEntryDifference(
                            table=reference,
                            entry=f"nabla_X{i + 1} X{j + 1}",
                            component=f"X{k + 1}",
                            derived=str(t[i, j, k]),
                            reference=str(published[i, j, k]),
                            difference=str(diff),
                        )
                    )
    if differences:
        logger.info(f"{reference}: {len(differences)} connection entries differ for {t.group_name}")
    return TableComparison(reference, t.group_name, 27, tuple(differences))


def compare_curvature(r: CurvatureTable, reference: str) -> TableComparison:
    """Differences on the published i < j entries (27 coefficients)."""
    published = reference_curvature(reference)
    differences = []
    for i in RANGE:
        for j in range(i + 1, 3):
            for k in RANGE:
                for l in RANGE:
                    diff = r[i, j, k, l] - published[i, j, k, l]
                    if not diff.is_zero():
                        differences.append(
                            TableEntryDifference(
                                table=reference,
                                entry=f"R(X{i + 1},X{j + 1})X{k + 1}",
                                component=f"X{l + 1}",
                                derived=str(r[i, j, k, l]),
                                reference=str(published[i, j, k, l]),
                                difference=str(diff),
                            )
                        )
    for d in differences:
        logger.info(f"{reference}: {d.entry} {d.component} derived {d.derived} vs published {d.reference}")
    return TableComparison(reference, r.group_name, 27, tuple(differences))


# 📌 **Coordinate-chart oracle**
def _jet_inverse(matrix: List[List[Jet]]) -> List[List[Jet]]:
    m = matrix
    cof = [
        [
            m[(b + 1) % 3][(a + 1) % 3] * m[(b + 2) % 3][(a + 2) % 3]
            - m[(b + 1) % 3][(a + 2) % 3] * m[(b + 2) % 3][(a + 1) % 3]
            for b in RANGE
        ]
        for a in RANGE
    ]
    det = m[0][0] * cof[0][0] + m[0][1] * cof[1][0] + m[0][2] * cof[2][0]
    inv_det = det.reciprocal()
    return [[cof[a][b] * inv_det for b in RANGE] for a in RANGE]


def chart_curvature_tensor(g: GroupModel, point: Sequence[float], L: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Riemann tensor of g_L computed in coordinates from its chart metric
    g_ab = sum_k B_ka B_kb G_kk, with Christoffel symbols from derivatives of g.
    :return: (metric g_ab at the point, Rc[a, b, c, d] with R(d_c, d_d) d_b = Rc[a,b,c,d] d_a).
    """
    jets = [Jet.variable(float(point[n]), n, 3, 2) for n in RANGE]
    B = g.coframe_jets(jets)
    G = (1.0, 1.0, float(L))
    metric = [[sum((B[k][a] * B[k][b] * G[k] for k in RANGE), Jet.constant(0.0, 3, 2)) for b in RANGE] for a in RANGE]
    inverse = _jet_inverse(metric)
    christoffel = [
        [
            [
                sum(
                    (
                        inverse[a][d] * (metric[d][c].diff(b) + metric[d][b].diff(c) - metric[b][c].diff(d)) * 0.5
                        for d in RANGE
                    ),
                    Jet.constant(0.0, 3, 1),
                )
                for c in RANGE
            ]
            for b in RANGE
        ]
        for a in RANGE
    ]
    Rc = np.zeros((3, 3, 3, 3))
    for a in RANGE:
        for b in RANGE:
            for c in RANGE:
                for d in RANGE:
                    value = christoffel[a][d][b].first(c) - christoffel[a][c][b].first(d)
                    for e in RANGE:
                        value += (
                            christoffel[a][c][e].value * christoffel[e][d][b].value
                            - christoffel[a][d][e].value * christoffel[e][c][b].value
                        )
                    Rc[a, b, c, d] = value
    gmat = np.array([[metric[a][b].value for b in RANGE] for a in RANGE])
    return gmat, Rc


def chart_sectional_curvature(g: GroupModel, point: Sequence[float], u, v, L: float) -> float:
    """
    Sectional curvature of the plane spanned by frame vectors u, v, computed
    entirely in coordinates (independent of the frame tables).
    """
    A = g.frame_matrix(point)
    U = np.einsum("i,ij->j", np.asarray(u, dtype=float), A)
    V = np.einsum("i,ij->j", np.asarray(v, dtype=float), A)
    gmat, Rc = chart_curvature_tensor(g, point, L)
    rvvu = np.einsum("abcd,b,c,d,ae->e", Rc, V, U, V, gmat)
    numerator = float(np.dot(rvvu, U))
    uu, vv, uv = U @ gmat @ U, V @ gmat @ V, U @ gmat @ V
    denominator = uu * vv - uv * uv
    if denominator <= 1e-12 * uu * vv:
        raise DegenerateSpanError("Vectors do not span a 2-plane")
    return numerator / denominator


def derived_tables(g: GroupModel) -> Tuple[ConnectionTable, CurvatureTable]:
    connection = koszul_connection(g)
    return connection, curvature_tensor(connection, g)


def compare_tables(g: GroupModel) -> List[TableComparison]:
    """Connection and curvature comparisons against the group's published tables (empty when none exist)."""
    if g.name not in REFERENCE_FOR_GROUP:
        return []
    connection_name, curvature_name = REFERENCE_FOR_GROUP[g.name]
    connection, curvature = derived_tables(g)
    return [compare_connection(connection, connection_name), compare_curvature(curvature, curvature_name)]
